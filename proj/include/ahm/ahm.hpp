#pragma once

#include "ahm/constructors.hpp"
#include "ahm/core.hpp"
#include "ahm/criticality.hpp"
#include "ahm/error.hpp"
#include "ahm/hessian.hpp"
#include "ahm/matrix_io.hpp"
#include "ahm/probes.hpp"
#include "ahm/random.hpp"
