#pragma once

#include "spintorque/analysis.hpp"
#include "spintorque/config.hpp"
#include "spintorque/constants.hpp"
#include "spintorque/dynamics.hpp"
#include "spintorque/ensemble.hpp"
#include "spintorque/errors.hpp"
#include "spintorque/io.hpp"
#include "spintorque/lasing.hpp"
#include "spintorque/linres.hpp"
#include "spintorque/lsq.hpp"
#include "spintorque/model.hpp"
#include "spintorque/protocol.hpp"
#include "spintorque/rng.hpp"
#include "spintorque/spin.hpp"
#include "spintorque/steadystate.hpp"
