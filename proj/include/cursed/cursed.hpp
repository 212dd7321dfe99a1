#pragma once

#include "cursed/check_report.hpp"
#include "cursed/errors.hpp"
#include "cursed/evaluate.hpp"
#include "cursed/experiments.hpp"
#include "cursed/mechanism.hpp"
#include "cursed/numerics.hpp"
#include "cursed/oracle.hpp"
#include "cursed/random_stream.hpp"
#include "cursed/scalar_map.hpp"
#include "cursed/serialize.hpp"
#include "cursed/signal_model.hpp"
#include "cursed/valuation.hpp"
#include "cursed/verify.hpp"
