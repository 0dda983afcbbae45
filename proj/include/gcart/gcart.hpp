#pragma once

#include "gcart/cifar.hpp"
#include "gcart/classical.hpp"
#include "gcart/corruptions.hpp"
#include "gcart/diffengine.hpp"
#include "gcart/evalreport.hpp"
#include "gcart/flops.hpp"
#include "gcart/gradcheck.hpp"
#include "gcart/hypernet.hpp"
#include "gcart/image.hpp"
#include "gcart/model.hpp"
#include "gcart/ppm.hpp"
#include "gcart/random.hpp"
#include "gcart/softhist.hpp"
#include "gcart/tonecurve.hpp"
#include "gcart/trainer.hpp"
