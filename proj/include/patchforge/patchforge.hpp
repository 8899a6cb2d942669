#ifndef PATCHFORGE_PATCHFORGE_HPP
#define PATCHFORGE_PATCHFORGE_HPP

#include "ablation.hpp"
#include "contour.hpp"
#include "errors.hpp"
#include "evolve.hpp"
#include "external_oracle.hpp"
#include "fitness.hpp"
#include "genome.hpp"
#include "geometry.hpp"
#include "homography.hpp"
#include "image_io.hpp"
#include "oracle.hpp"
#include "pipeline.hpp"
#include "random.hpp"
#include "raster.hpp"
#include "scenario_io.hpp"

#endif
