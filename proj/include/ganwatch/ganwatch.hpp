// Copyright 2026 The ganwatch Authors
// SPDX-License-Identifier: Apache-2.0
//
// Umbrella header: the full ganwatch library.

#pragma once

#include "ganwatch/calibration.hpp"   // IWYU pragma: export
#include "ganwatch/error.hpp"         // IWYU pragma: export
#include "ganwatch/loss_patterns.hpp" // IWYU pragma: export
#include "ganwatch/metrics.hpp"       // IWYU pragma: export
#include "ganwatch/report.hpp"        // IWYU pragma: export
#include "ganwatch/rng.hpp"           // IWYU pragma: export
#include "ganwatch/sentinel.hpp"      // IWYU pragma: export
#include "ganwatch/simulator.hpp"     // IWYU pragma: export
#include "ganwatch/telemetry.hpp"     // IWYU pragma: export
