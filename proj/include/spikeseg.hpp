#pragma once

#include "spikeseg/commands.hpp"
#include "spikeseg/config.hpp"
#include "spikeseg/corpus.hpp"
#include "spikeseg/error.hpp"
#include "spikeseg/event_core.hpp"
#include "spikeseg/flow.hpp"
#include "spikeseg/gate_pipeline.hpp"
#include "spikeseg/geometry.hpp"
#include "spikeseg/image.hpp"
#include "spikeseg/io.hpp"
#include "spikeseg/metrics.hpp"
#include "spikeseg/region_grid.hpp"
#include "spikeseg/report.hpp"
#include "spikeseg/rng.hpp"
#include "spikeseg/snn/checkpoint.hpp"
#include "spikeseg/snn/flops.hpp"
#include "spikeseg/snn/layers.hpp"
#include "spikeseg/snn/network.hpp"
#include "spikeseg/snn/network_spec.hpp"
#include "spikeseg/snn/neuron.hpp"
#include "spikeseg/snn/segment.hpp"
#include "spikeseg/snn/tensor.hpp"
#include "spikeseg/snn/train.hpp"
#include "spikeseg/synth.hpp"
#include "spikeseg/trainer.hpp"
#include "spikeseg/warp.hpp"
