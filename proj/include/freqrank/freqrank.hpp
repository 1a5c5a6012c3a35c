#pragma once

// Umbrella header for the FreqRank toolkit.

#include "freqrank/config.hpp"
#include "freqrank/corpus.hpp"
#include "freqrank/eval.hpp"
#include "freqrank/hash.hpp"
#include "freqrank/localize.hpp"
#include "freqrank/model.hpp"
#include "freqrank/mutation.hpp"
#include "freqrank/oracle.hpp"
#include "freqrank/parallel.hpp"
#include "freqrank/ranker.hpp"
#include "freqrank/text.hpp"
