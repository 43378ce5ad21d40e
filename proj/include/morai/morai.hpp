#pragma once

#include "morai/agents/agent.hpp"
#include "morai/agents/lstm_agent.hpp"
#include "morai/agents/markov.hpp"
#include "morai/agents/shape.hpp"
#include "morai/cnn.hpp"
#include "morai/config.hpp"
#include "morai/errors.hpp"
#include "morai/eval.hpp"
#include "morai/level.hpp"
#include "morai/palette.hpp"
#include "morai/pipeline.hpp"
#include "morai/session.hpp"
#include "morai/session_log.hpp"
#include "morai/smdp.hpp"
#include "morai/study.hpp"
