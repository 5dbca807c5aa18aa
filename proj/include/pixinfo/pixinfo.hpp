#pragma once

#include "pixinfo/augment.hpp"
#include "pixinfo/config.hpp"
#include "pixinfo/encoder.hpp"
#include "pixinfo/error.hpp"
#include "pixinfo/image_io.hpp"
#include "pixinfo/imaging.hpp"
#include "pixinfo/infometrics.hpp"
#include "pixinfo/infonce.hpp"
#include "pixinfo/matching.hpp"
#include "pixinfo/pipeline.hpp"
#include "pixinfo/random.hpp"
#include "pixinfo/raster_io.hpp"
#include "pixinfo/synthdata.hpp"
#include "pixinfo/train.hpp"
