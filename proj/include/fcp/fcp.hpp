#pragma once

// Umbrella header.

#include "fcp/cluster.hpp"
#include "fcp/convolution.hpp"
#include "fcp/error.hpp"
#include "fcp/filters.hpp"
#include "fcp/graph_fcp.hpp"
#include "fcp/image.hpp"
#include "fcp/image_io.hpp"
#include "fcp/max_distribution.hpp"
#include "fcp/msd.hpp"
#include "fcp/noise_model.hpp"
#include "fcp/pipeline.hpp"
#include "fcp/rng.hpp"
#include "fcp/serialize.hpp"
#include "fcp/superset.hpp"
#include "fcp/synth.hpp"
#include "fcp/threshold.hpp"
