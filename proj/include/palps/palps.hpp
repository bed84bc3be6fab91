#pragma once

// PALPS toolkit: parse spatially explicit individual-based population models,
// execute their probabilistic/nondeterministic semantics, build the explicit
// MDP, check PCTL properties, and sample traces.

#include "palps/ast.hpp"
#include "palps/corpus.hpp"
#include "palps/diagnostics.hpp"
#include "palps/environment.hpp"
#include "palps/parser.hpp"
#include "palps/pctl.hpp"
#include "palps/pctl_formula.hpp"
#include "palps/pretty.hpp"
#include "palps/rational.hpp"
#include "palps/semantics.hpp"
#include "palps/simulator.hpp"
#include "palps/statespace.hpp"
#include "palps/wellformed.hpp"
