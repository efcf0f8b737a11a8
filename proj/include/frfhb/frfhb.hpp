#pragma once

// Umbrella header.

#include "frfhb/analysis.hpp"
#include "frfhb/config.hpp"
#include "frfhb/data.hpp"
#include "frfhb/diagnostics.hpp"
#include "frfhb/distributions.hpp"
#include "frfhb/errors.hpp"
#include "frfhb/io.hpp"
#include "frfhb/modal.hpp"
#include "frfhb/model.hpp"
#include "frfhb/nuts.hpp"
#include "frfhb/pipeline.hpp"
#include "frfhb/random.hpp"
#include "frfhb/signal.hpp"
#include "frfhb/synthetic.hpp"
#include "frfhb/transforms.hpp"
