#pragma once

#include "hnlabel/geometry.hpp"
#include "hnlabel/hn_labels.hpp"
#include "hnlabel/metrics.hpp"
#include "hnlabel/orientation.hpp"
#include "hnlabel/pipeline.hpp"
#include "hnlabel/png_io.hpp"
#include "hnlabel/rgbd_ingest.hpp"
#include "hnlabel/stats.hpp"
#include "hnlabel/synthetic.hpp"
