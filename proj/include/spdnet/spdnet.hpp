#ifndef SPDNET_SPDNET_HPP
#define SPDNET_SPDNET_HPP

#include "spdnet/dataset_io.hpp"
#include "spdnet/embedding.hpp"
#include "spdnet/errors.hpp"
#include "spdnet/evaluate.hpp"
#include "spdnet/explain.hpp"
#include "spdnet/features.hpp"
#include "spdnet/generators.hpp"
#include "spdnet/model_io.hpp"
#include "spdnet/network.hpp"
#include "spdnet/rng.hpp"
#include "spdnet/signal.hpp"
#include "spdnet/spd_core.hpp"
#include "spdnet/training.hpp"

#endif
