#pragma once

#include <poisson3d/builtin_systems.hpp>
#include <poisson3d/casimir.hpp>
#include <poisson3d/darboux.hpp>
#include <poisson3d/domain.hpp>
#include <poisson3d/dynamics.hpp>
#include <poisson3d/error.hpp>
#include <poisson3d/expr.hpp>
#include <poisson3d/family.hpp>
#include <poisson3d/scalar_fields.hpp>
#include <poisson3d/spec_file.hpp>
#include <poisson3d/verification.hpp>
