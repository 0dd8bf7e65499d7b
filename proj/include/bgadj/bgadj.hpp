#pragma once

#include "bgadj/canonical.hpp"
#include "bgadj/errors.hpp"
#include "bgadj/fit.hpp"
#include "bgadj/io.hpp"
#include "bgadj/linalg.hpp"
#include "bgadj/mixture.hpp"
#include "bgadj/parallel.hpp"
#include "bgadj/rng.hpp"
#include "bgadj/stats.hpp"
#include "bgadj/synth.hpp"
#include "bgadj/tailmc.hpp"
