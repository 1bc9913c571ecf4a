#pragma once

// Umbrella header: the whole toolkit behind one include.

#include "config.hpp"
#include "core/blas.hpp"
#include "core/error.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"
#include "core/threads.hpp"
#include "core/warnings.hpp"
#include "data/image.hpp"
#include "data/image_ops.hpp"
#include "data/labels.hpp"
#include "data/loader.hpp"
#include "data/manifest.hpp"
#include "data/preprocess.hpp"
#include "eval/metrics.hpp"
#include "models/build.hpp"
#include "models/model.hpp"
#include "models/spec.hpp"
#include "nn/loss.hpp"
#include "train/adam.hpp"
#include "train/checkpoint.hpp"
#include "train/schedule.hpp"
#include "train/trainer.hpp"
