#pragma once

// Umbrella header for the whole library.

#include "refine/attacks/adaptive.hpp"
#include "refine/attacks/poison.hpp"
#include "refine/attacks/trigger.hpp"
#include "refine/baseline/shrinkpad.hpp"
#include "refine/blackbox/distill.hpp"
#include "refine/blackbox/oracle.hpp"
#include "refine/classifier/classifier.hpp"
#include "refine/classifier/train.hpp"
#include "refine/config.hpp"
#include "refine/data/dataset.hpp"
#include "refine/data/imageops.hpp"
#include "refine/data/synth.hpp"
#include "refine/eval/metrics.hpp"
#include "refine/eval/wasserstein.hpp"
#include "refine/refine/train.hpp"
