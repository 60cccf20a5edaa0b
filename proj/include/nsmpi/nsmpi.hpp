#pragma once

#include "nsmpi/mdp.hpp"
#include "nsmpi/evaluate.hpp"
#include "nsmpi/bounds.hpp"
#include "nsmpi/engine.hpp"
#include "nsmpi/tight.hpp"
#include "nsmpi/benchmarks.hpp"
#include "nsmpi/io.hpp"
