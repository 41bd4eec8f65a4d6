#pragma once

#include "negobelief/error.hpp"
#include "negobelief/posterior.hpp"
#include "negobelief/domain.hpp"
#include "negobelief/belief.hpp"
#include "negobelief/planner.hpp"
#include "negobelief/context.hpp"
#include "negobelief/lexicon.hpp"
#include "negobelief/providers.hpp"
#include "negobelief/remote.hpp"
#include "negobelief/corpus.hpp"
#include "negobelief/tagged.hpp"
#include "negobelief/offer_text.hpp"
#include "negobelief/synth.hpp"
#include "negobelief/agent.hpp"
#include "negobelief/agent_spec.hpp"
#include "negobelief/replay.hpp"
#include "negobelief/metrics.hpp"
#include "negobelief/bootstrap.hpp"
#include "negobelief/sweep.hpp"
#include "negobelief/audit.hpp"
#include "negobelief/session.hpp"
#include "negobelief/service.hpp"
