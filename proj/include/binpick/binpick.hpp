#pragma once

#include "binpick/archetype.hpp"
#include "binpick/errors.hpp"
#include "binpick/experiment.hpp"
#include "binpick/files.hpp"
#include "binpick/graspsim.hpp"
#include "binpick/grid.hpp"
#include "binpick/mask.hpp"
#include "binpick/perception.hpp"
#include "binpick/pgm.hpp"
#include "binpick/planner.hpp"
#include "binpick/rng.hpp"
#include "binpick/scene.hpp"
#include "binpick/serialize.hpp"
