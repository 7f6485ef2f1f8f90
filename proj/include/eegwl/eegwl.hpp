#pragma once

#include "classifiers.hpp"
#include "config.hpp"
#include "connectivity.hpp"
#include "dataset.hpp"
#include "eeg_data.hpp"
#include "error.hpp"
#include "evaluation.hpp"
#include "features.hpp"
#include "fft.hpp"
#include "folds.hpp"
#include "labeling.hpp"
#include "metrics.hpp"
#include "random.hpp"
#include "selection.hpp"
#include "spectral.hpp"
#include "stats.hpp"
#include "subset_search.hpp"
#include "synth.hpp"
