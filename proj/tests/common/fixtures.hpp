// Small configurations that keep unit tests fast.
#pragma once

#include "cinp/config.hpp"

namespace fixture {

inline cinp::ModelCfg tiny_model(cinp::Dims3 dims = {8, 8, 8}, std::size_t n_rois = 6) {
    cinp::ModelCfg m;
    m.visual.dims = dims;
    m.visual.patch_size = 4;
    m.visual.embed_dim = 8;
    m.visual.n_layers = 1;
    m.visual.n_heads = 2;
    m.network.n_rois = n_rois;
    m.network.embed_dim = 8;
    m.network.n_layers = 1;
    m.network.n_heads = 2;
    return m;
}

// A complete config: 24 subjects, 8^3 volumes, 6 ROIs, batch 4, 2 epochs.
inline cinp::Config tiny_config(std::uint64_t seed = 0) {
    cinp::Config cfg = cinp::desk_config();
    cfg.cohort.n_subjects = 24;
    cfg.cohort.dims = {8, 8, 8};
    cfg.cohort.n_rois = 6;
    cfg.cohort.n_timepoints = 40;
    cfg.model = tiny_model();
    cfg.hyper.epochs = 2;
    cfg.hyper.batch_size = 4;
    cinp::apply_seed(cfg, seed);
    return cfg;
}

}  // namespace fixture
