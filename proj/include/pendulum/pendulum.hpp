#pragma once

// Phase-plane toolkit for the driven damped pendulum on the cylinder:
// equilibria and separatrix slopes, adaptive integration with event
// localization, saddle-connection shooting and the critical drive, the
// rotational limit cycle with its return-map diagnostics, and sweep drivers.

#include "pendulum/connection.hpp"
#include "pendulum/cycle.hpp"
#include "pendulum/errors.hpp"
#include "pendulum/integrate.hpp"
#include "pendulum/io.hpp"
#include "pendulum/model.hpp"
#include "pendulum/sweep.hpp"
