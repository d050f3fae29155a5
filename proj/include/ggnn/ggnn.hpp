#pragma once

#include "ggnn/dataset.hpp"
#include "ggnn/dense_matrix.hpp"
#include "ggnn/error.hpp"
#include "ggnn/experiment.hpp"
#include "ggnn/graph.hpp"
#include "ggnn/kernels.hpp"
#include "ggnn/model.hpp"
#include "ggnn/nn.hpp"
#include "ggnn/pretrain.hpp"
#include "ggnn/rng.hpp"
#include "ggnn/sparse_matrix.hpp"
