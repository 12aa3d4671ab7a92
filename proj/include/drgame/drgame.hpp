#pragma once

// Umbrella header: the whole demand-response game library.

#include "drgame/allocation.hpp"
#include "drgame/asymptotics.hpp"
#include "drgame/distributed.hpp"
#include "drgame/equilibrium.hpp"
#include "drgame/errors.hpp"
#include "drgame/model.hpp"
#include "drgame/serialize.hpp"
#include "drgame/studio.hpp"
