#pragma once

#include "netboot/bootstrap.hpp"
#include "netboot/diagnostics.hpp"
#include "netboot/eigensolver.hpp"
#include "netboot/embed.hpp"
#include "netboot/error.hpp"
#include "netboot/fileio.hpp"
#include "netboot/graph.hpp"
#include "netboot/graph_io.hpp"
#include "netboot/knn.hpp"
#include "netboot/parallel.hpp"
#include "netboot/random.hpp"
#include "netboot/svg.hpp"
#include "netboot/tsne.hpp"
#include "netboot/uncertainty.hpp"
#include "netboot/validity.hpp"
