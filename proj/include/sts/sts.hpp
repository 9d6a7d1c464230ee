#pragma once

#include "sts/acquisition.hpp"
#include "sts/channel.hpp"
#include "sts/classifier.hpp"
#include "sts/client.hpp"
#include "sts/config.hpp"
#include "sts/error.hpp"
#include "sts/evaluate.hpp"
#include "sts/export.hpp"
#include "sts/live.hpp"
#include "sts/motion_profile.hpp"
#include "sts/pipeline.hpp"
#include "sts/rng.hpp"
#include "sts/sampler.hpp"
#include "sts/sensor_model.hpp"
#include "sts/server.hpp"
#include "sts/store.hpp"
#include "sts/synth_cohort.hpp"
#include "sts/timeutil.hpp"
#include "sts/wire.hpp"
