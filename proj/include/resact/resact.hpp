// Copyright 2026 The ResAct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "resact/actor.hpp"
#include "resact/adam.hpp"
#include "resact/baselines.hpp"
#include "resact/batch.hpp"
#include "resact/checkpoint.hpp"
#include "resact/config_io.hpp"
#include "resact/critic.hpp"
#include "resact/cvae.hpp"
#include "resact/dataset_io.hpp"
#include "resact/env.hpp"
#include "resact/evaluator.hpp"
#include "resact/gaussian.hpp"
#include "resact/gradcheck.hpp"
#include "resact/metrics.hpp"
#include "resact/mlp.hpp"
#include "resact/policy.hpp"
#include "resact/regularizers.hpp"
#include "resact/rng.hpp"
#include "resact/stats.hpp"
#include "resact/tensor.hpp"
#include "resact/trainer.hpp"
