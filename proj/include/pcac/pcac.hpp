#pragma once

#include <pcac/bocf.hpp>
#include <pcac/common.hpp>
#include <pcac/controller.hpp>
#include <pcac/fstats.hpp>
#include <pcac/mpc.hpp>
#include <pcac/plant.hpp>
#include <pcac/qp.hpp>
#include <pcac/rls_vrf.hpp>
#include <pcac/saturation.hpp>
#include <pcac/scenario.hpp>
#include <pcac/simulation.hpp>
#include <pcac/trace_io.hpp>
#include <pcac/trajectory.hpp>
