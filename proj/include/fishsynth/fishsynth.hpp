#pragma once

#include "fishsynth/calibration.hpp"
#include "fishsynth/dataset.hpp"
#include "fishsynth/errors.hpp"
#include "fishsynth/image_io.hpp"
#include "fishsynth/json_io.hpp"
#include "fishsynth/projection.hpp"
#include "fishsynth/raster.hpp"
#include "fishsynth/warp.hpp"
