// comply/comply.hpp - Umbrella header
#pragma once

#include "comply/action.hpp"
#include "comply/ast.hpp"
#include "comply/context.hpp"
#include "comply/diagnostic.hpp"
#include "comply/engine.hpp"
#include "comply/env/driving.hpp"
#include "comply/env/environment.hpp"
#include "comply/env/sudoku.hpp"
#include "comply/eval.hpp"
#include "comply/grounder.hpp"
#include "comply/internalizer.hpp"
#include "comply/mitigator.hpp"
#include "comply/planner.hpp"
#include "comply/spec_lang.hpp"
#include "comply/trace.hpp"
#include "comply/value.hpp"
#include "comply/world.hpp"
