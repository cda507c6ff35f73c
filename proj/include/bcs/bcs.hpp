#pragma once

#include "bcs/acquisition.hpp"
#include "bcs/calibration.hpp"
#include "bcs/data.hpp"
#include "bcs/errors.hpp"
#include "bcs/fingerprint.hpp"
#include "bcs/formats.hpp"
#include "bcs/image.hpp"
#include "bcs/image_io.hpp"
#include "bcs/metrics.hpp"
#include "bcs/model.hpp"
#include "bcs/rng.hpp"
#include "bcs/sensing.hpp"
#include "bcs/training.hpp"
#include "bcs/tv.hpp"
