#pragma once

#include "linecover/config.hpp"
#include "linecover/error.hpp"
#include "linecover/evaluate.hpp"
#include "linecover/geometry.hpp"
#include "linecover/ingest.hpp"
#include "linecover/intensity.hpp"
#include "linecover/io.hpp"
#include "linecover/parallel.hpp"
#include "linecover/pipeline.hpp"
#include "linecover/placement.hpp"
#include "linecover/sensing.hpp"
