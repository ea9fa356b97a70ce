#ifndef NWOT_NWOT_HPP
#define NWOT_NWOT_HPP

#include "applications.hpp"
#include "clustering.hpp"
#include "components.hpp"
#include "core.hpp"
#include "datagen.hpp"
#include "fitting.hpp"
#include "io.hpp"
#include "mixture_transport.hpp"
#include "mode_count.hpp"
#include "nw.hpp"
#include "ot.hpp"
#include "ot_bruteforce.hpp"
#include "parallel.hpp"

#endif
