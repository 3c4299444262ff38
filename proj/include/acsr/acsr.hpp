#pragma once

#include "acsr/ctc.hpp"
#include "acsr/domain.hpp"
#include "acsr/error.hpp"
#include "acsr/eval.hpp"
#include "acsr/formats.hpp"
#include "acsr/fusion.hpp"
#include "acsr/json_schema.hpp"
#include "acsr/keyframe.hpp"
#include "acsr/prompting.hpp"
#include "acsr/recognizer.hpp"
#include "acsr/rng.hpp"
#include "acsr/synth.hpp"
#include "acsr/train.hpp"
