#pragma once

#include "backend.hpp"
#include "cleaner.hpp"
#include "core.hpp"
#include "errors.hpp"
#include "eval.hpp"
#include "features.hpp"
#include "harmonizer.hpp"
#include "http.hpp"
#include "logistic.hpp"
#include "nli_formatter.hpp"
#include "report.hpp"
#include "rng.hpp"
#include "verbalizer.hpp"
#include "zeroshot.hpp"
