// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "rydscan/analysis.hpp"
#include "rydscan/errors.hpp"
#include "rydscan/grid.hpp"
#include "rydscan/metrics.hpp"
#include "rydscan/physics.hpp"
#include "rydscan/plot.hpp"
#include "rydscan/scan.hpp"
#include "rydscan/scene.hpp"
#include "rydscan/spectroscopy.hpp"
