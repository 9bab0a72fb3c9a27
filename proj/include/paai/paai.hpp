#pragma once

#include "paai/calibration.hpp"
#include "paai/car_following.hpp"
#include "paai/checkpoint.hpp"
#include "paai/error.hpp"
#include "paai/ingest.hpp"
#include "paai/loss.hpp"
#include "paai/model.hpp"
#include "paai/nn/adamw.hpp"
#include "paai/nn/attention.hpp"
#include "paai/nn/dense_head.hpp"
#include "paai/nn/gradcheck.hpp"
#include "paai/nn/lstm.hpp"
#include "paai/nn/tensor.hpp"
#include "paai/phase.hpp"
#include "paai/simulation.hpp"
#include "paai/stats.hpp"
#include "paai/synthetic.hpp"
#include "paai/training.hpp"
