#ifndef ISTLAB_MODEL_HPP
#define ISTLAB_MODEL_HPP

#include "istlab/kernel.hpp"
#include "istlab/rate.hpp"

namespace istlab {

/// Tree parameters: birth rate b and lifetime kernel K.
struct Model {
  RateFunction b;
  LifetimeKernel K;
};

}  // namespace istlab

#endif
