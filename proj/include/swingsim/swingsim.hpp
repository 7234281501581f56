#pragma once

#include "swingsim/controller.hpp"
#include "swingsim/device.hpp"
#include "swingsim/dispatch.hpp"
#include "swingsim/errors.hpp"
#include "swingsim/fidelity.hpp"
#include "swingsim/network.hpp"
#include "swingsim/runner.hpp"
#include "swingsim/scenario_io.hpp"
#include "swingsim/simulator.hpp"
