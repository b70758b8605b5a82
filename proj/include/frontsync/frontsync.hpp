#pragma once

#include "frontsync/common.hpp"
#include "frontsync/config.hpp"
#include "frontsync/dft.hpp"
#include "frontsync/experiment.hpp"
#include "frontsync/link_sim.hpp"
#include "frontsync/metrics.hpp"
#include "frontsync/psd_optimizer.hpp"
#include "frontsync/quantizer.hpp"
#include "frontsync/rng.hpp"
#include "frontsync/signal_model.hpp"
