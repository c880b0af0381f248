#pragma once

#include <linkmix/chi2.hpp>
#include <linkmix/coordinates.hpp>
#include <linkmix/errors.hpp>
#include <linkmix/harness.hpp>
#include <linkmix/inference.hpp>
#include <linkmix/io.hpp>
#include <linkmix/likelihood.hpp>
#include <linkmix/lrt.hpp>
#include <linkmix/model.hpp>
#include <linkmix/numdiff.hpp>
#include <linkmix/optimize.hpp>
#include <linkmix/parallel.hpp>
#include <linkmix/random.hpp>
#include <linkmix/simulate.hpp>
#include <linkmix/types.hpp>
