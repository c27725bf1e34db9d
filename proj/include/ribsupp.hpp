#pragma once

// Rib shadow suppression for chest radiographs in contour-normal (ST) space.

#include "ribsupp/atomic_file.hpp"
#include "ribsupp/contour.hpp"
#include "ribsupp/error.hpp"
#include "ribsupp/geometry.hpp"
#include "ribsupp/image.hpp"
#include "ribsupp/mask.hpp"
#include "ribsupp/metrics.hpp"
#include "ribsupp/parallel.hpp"
#include "ribsupp/phantom.hpp"
#include "ribsupp/png_io.hpp"
#include "ribsupp/st_space.hpp"
#include "ribsupp/suppression.hpp"
#include "ribsupp/tuner.hpp"
