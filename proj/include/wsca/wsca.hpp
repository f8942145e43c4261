#pragma once

#include "wsca/correlation.hpp"
#include "wsca/data_model.hpp"
#include "wsca/error.hpp"
#include "wsca/json_io.hpp"
#include "wsca/labels_io.hpp"
#include "wsca/metrics.hpp"
#include "wsca/pipeline.hpp"
#include "wsca/projection.hpp"
#include "wsca/report_io.hpp"
#include "wsca/synthgen.hpp"
#include "wsca/tensor_io.hpp"
#include "wsca/trainer.hpp"
