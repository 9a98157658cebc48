#pragma once

// Umbrella header: the whole toolkit.

#include "fpu/core.hpp"
#include "fpu/chain.hpp"
#include "fpu/fft.hpp"
#include "fpu/spectral.hpp"
#include "fpu/analysis.hpp"
#include "fpu/breather.hpp"
#include "fpu/io.hpp"
#include "fpu/config.hpp"
#include "fpu/experiment.hpp"
#include "fpu/selfcheck.hpp"
