#ifndef GPCHECK_GPCHECK_HPP
#define GPCHECK_GPCHECK_HPP

#include "gpcheck/error.hpp"
#include "gpcheck/fft.hpp"
#include "gpcheck/gp.hpp"
#include "gpcheck/grid.hpp"
#include "gpcheck/inequalities.hpp"
#include "gpcheck/io.hpp"
#include "gpcheck/krylov.hpp"
#include "gpcheck/manybody.hpp"
#include "gpcheck/potentials.hpp"
#include "gpcheck/radial.hpp"
#include "gpcheck/scattering.hpp"

#endif
