// SPDX-License-Identifier: Apache-2.0
//
// Umbrella header for the CP-SCM massive MIMO uplink library.
#pragma once

#include "cpscm/analysis.hpp"
#include "cpscm/channel.hpp"
#include "cpscm/common.hpp"
#include "cpscm/config.hpp"
#include "cpscm/detection.hpp"
#include "cpscm/fft.hpp"
#include "cpscm/harness.hpp"
#include "cpscm/rng.hpp"
#include "cpscm/verify.hpp"
#include "cpscm/waveform.hpp"
