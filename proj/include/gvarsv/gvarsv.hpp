#ifndef GVARSV_GVARSV_HPP
#define GVARSV_GVARSV_HPP

// Everything except the HTTP client (gvarsv/io/fetch.hpp), which pulls in cpp-httplib.

#include "gvarsv/chain.hpp"
#include "gvarsv/error.hpp"
#include "gvarsv/inference.hpp"
#include "gvarsv/io/csv.hpp"
#include "gvarsv/io/persist.hpp"
#include "gvarsv/io/serialize.hpp"
#include "gvarsv/io/synthetic.hpp"
#include "gvarsv/kalman.hpp"
#include "gvarsv/mixture.hpp"
#include "gvarsv/model.hpp"
#include "gvarsv/panel_model.hpp"
#include "gvarsv/rng.hpp"
#include "gvarsv/sampler.hpp"
#include "gvarsv/shrinkage.hpp"
#include "gvarsv/yield_curve.hpp"

#endif  // GVARSV_GVARSV_HPP
