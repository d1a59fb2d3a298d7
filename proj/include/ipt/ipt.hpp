#pragma once

#include "ipt/bench/metrics.hpp"
#include "ipt/bench/pipeline.hpp"
#include "ipt/bench/simulator.hpp"
#include "ipt/features.hpp"
#include "ipt/ingest.hpp"
#include "ipt/labels.hpp"
#include "ipt/nn/adam.hpp"
#include "ipt/nn/checkpoint.hpp"
#include "ipt/nn/gradcheck.hpp"
#include "ipt/nn/layers.hpp"
#include "ipt/nn/loss.hpp"
#include "ipt/nn/mlp.hpp"
#include "ipt/nn/network.hpp"
#include "ipt/pdr.hpp"
#include "ipt/tracking.hpp"
#include "ipt/wifi.hpp"
