#pragma once

#include "rrhtpp/checkpoint.hpp"
#include "rrhtpp/config.hpp"
#include "rrhtpp/decoder.hpp"
#include "rrhtpp/encoder.hpp"
#include "rrhtpp/error.hpp"
#include "rrhtpp/evaluation.hpp"
#include "rrhtpp/event_log.hpp"
#include "rrhtpp/hypergraph.hpp"
#include "rrhtpp/layers.hpp"
#include "rrhtpp/model.hpp"
#include "rrhtpp/nce.hpp"
#include "rrhtpp/noise.hpp"
#include "rrhtpp/synth.hpp"
#include "rrhtpp/tensor.hpp"
