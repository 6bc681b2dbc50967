#ifndef LCE_LCE_HPP
#define LCE_LCE_HPP

#include "lce/corpus_io.hpp"
#include "lce/error.hpp"
#include "lce/evaluation.hpp"
#include "lce/experiments.hpp"
#include "lce/inverted_index.hpp"
#include "lce/random.hpp"
#include "lce/reranker.hpp"
#include "lce/retrieval.hpp"
#include "lce/synth.hpp"
#include "lce/text_analysis.hpp"
#include "lce/training.hpp"

#endif
