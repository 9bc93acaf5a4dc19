#pragma once

#include "driftlens/arena.hpp"
#include "driftlens/corpus.hpp"
#include "driftlens/depth.hpp"
#include "driftlens/embed.hpp"
#include "driftlens/error.hpp"
#include "driftlens/lexical.hpp"
#include "driftlens/ngram_lm.hpp"
#include "driftlens/report.hpp"
#include "driftlens/rng.hpp"
#include "driftlens/tokenizer.hpp"
