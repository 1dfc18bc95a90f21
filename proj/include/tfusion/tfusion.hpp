#pragma once

#include "tfusion/analysis.hpp"
#include "tfusion/config.hpp"
#include "tfusion/geometry.hpp"
#include "tfusion/io.hpp"
#include "tfusion/operators.hpp"
#include "tfusion/scene.hpp"
#include "tfusion/simulate.hpp"
#include "tfusion/solver.hpp"
#include "tfusion/types.hpp"
#include "tfusion/version.hpp"
