#pragma once

#include "psfr/error.hpp"
#include "psfr/image.hpp"
#include "psfr/media_io.hpp"
#include "psfr/vision_kernels.hpp"
#include "psfr/psfr_tracker.hpp"
#include "psfr/frame_signals.hpp"
#include "psfr/keyframe_selector.hpp"
#include "psfr/eval_metrics.hpp"
#include "psfr/json_io.hpp"
#include "psfr/evolve.hpp"
#include "psfr/synth.hpp"
#include "psfr/parallel.hpp"
