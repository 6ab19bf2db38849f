#ifndef INTLAB_INTLAB_HPP
#define INTLAB_INTLAB_HPP

// Umbrella header: the whole integrator-twin library.

#include "intlab/client.hpp"
#include "intlab/controller.hpp"
#include "intlab/csv.hpp"
#include "intlab/drift.hpp"
#include "intlab/errors.hpp"
#include "intlab/integrator.hpp"
#include "intlab/net.hpp"
#include "intlab/protocol.hpp"
#include "intlab/server.hpp"
#include "intlab/shot.hpp"
#include "intlab/trace.hpp"
#include "intlab/util.hpp"

#endif
