#pragma once

#include "locpoly/error.hpp"
#include "locpoly/multi_index.hpp"
#include "locpoly/operator.hpp"
#include "locpoly/dataset.hpp"
#include "locpoly/regression.hpp"
#include "locpoly/robust.hpp"
#include "locpoly/random.hpp"
#include "locpoly/synthetic.hpp"
#include "locpoly/experiment.hpp"
#include "locpoly/csv.hpp"
#include "locpoly/svg.hpp"
