// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "case_table.hpp"
#include "config.hpp"
#include "error.hpp"
#include "eval.hpp"
#include "field.hpp"
#include "geometry_io.hpp"
#include "mcpm.hpp"
#include "mesh.hpp"
#include "parallel.hpp"
#include "pipeline.hpp"
#include "reconstruct.hpp"
#include "rng.hpp"
#include "vec3.hpp"
