#pragma once

// Umbrella header: the whole library.

#include "vidkd/archive.hpp"
#include "vidkd/dataset/batches.hpp"
#include "vidkd/dataset/fixture.hpp"
#include "vidkd/dataset/frames.hpp"
#include "vidkd/dataset/manifest.hpp"
#include "vidkd/dataset/sampling.hpp"
#include "vidkd/dataset/scan.hpp"
#include "vidkd/error.hpp"
#include "vidkd/evaluation/curves.hpp"
#include "vidkd/evaluation/evaluate.hpp"
#include "vidkd/evaluation/metrics.hpp"
#include "vidkd/evaluation/sweep.hpp"
#include "vidkd/experiment.hpp"
#include "vidkd/losses.hpp"
#include "vidkd/models/backbone.hpp"
#include "vidkd/models/factory.hpp"
#include "vidkd/models/jointnet.hpp"
#include "vidkd/models/model.hpp"
#include "vidkd/models/student.hpp"
#include "vidkd/nn/conv.hpp"
#include "vidkd/nn/layers.hpp"
#include "vidkd/nn/optim.hpp"
#include "vidkd/training/checkpoint.hpp"
#include "vidkd/training/config.hpp"
#include "vidkd/training/history.hpp"
#include "vidkd/training/schedule.hpp"
#include "vidkd/training/trainer.hpp"
