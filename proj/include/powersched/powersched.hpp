#pragma once

// Convenience include for the whole library. Individual headers stay usable
// on their own; the CLI layer is left out because it pulls in CLI11.

#include "powersched/analysis.hpp"
#include "powersched/channel.hpp"
#include "powersched/config.hpp"
#include "powersched/control.hpp"
#include "powersched/csv.hpp"
#include "powersched/errors.hpp"
#include "powersched/linalg.hpp"
#include "powersched/model.hpp"
#include "powersched/rng.hpp"
#include "powersched/sched.hpp"
#include "powersched/sim.hpp"
#include "powersched/svg.hpp"
