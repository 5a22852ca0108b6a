#ifndef HSSNB_HSSNB_HPP
#define HSSNB_HSSNB_HPP

// Umbrella header for the whole library.

#include "hssnb/checkpoint.hpp"
#include "hssnb/conv.hpp"
#include "hssnb/dataset.hpp"
#include "hssnb/errors.hpp"
#include "hssnb/experiment.hpp"
#include "hssnb/gradcheck.hpp"
#include "hssnb/lstm.hpp"
#include "hssnb/metrics.hpp"
#include "hssnb/network.hpp"
#include "hssnb/patches.hpp"
#include "hssnb/pca.hpp"
#include "hssnb/ppm.hpp"
#include "hssnb/tensor.hpp"
#include "hssnb/train.hpp"

#endif  // HSSNB_HSSNB_HPP
