#pragma once

#include "wast/config.hpp"
#include "wast/cost.hpp"
#include "wast/data.hpp"
#include "wast/error.hpp"
#include "wast/eval.hpp"
#include "wast/heatmap.hpp"
#include "wast/matrix.hpp"
#include "wast/model.hpp"
#include "wast/random.hpp"
#include "wast/selection.hpp"
#include "wast/sparse_layer.hpp"
#include "wast/topology.hpp"
