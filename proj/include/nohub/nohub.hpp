#pragma once

// Umbrella header for the noHub hyperspherical embedding library.

#include "nohub/affinity.hpp"
#include "nohub/benchmark.hpp"
#include "nohub/core.hpp"
#include "nohub/embedding.hpp"
#include "nohub/episodes.hpp"
#include "nohub/geometry.hpp"
#include "nohub/hubness.hpp"
#include "nohub/io.hpp"
