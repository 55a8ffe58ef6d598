#pragma once

#include "neuralogram/checkpoint.hpp"
#include "neuralogram/corpus.hpp"
#include "neuralogram/errors.hpp"
#include "neuralogram/extractor.hpp"
#include "neuralogram/features.hpp"
#include "neuralogram/gradcheck.hpp"
#include "neuralogram/layers.hpp"
#include "neuralogram/linear_transforms.hpp"
#include "neuralogram/matrix_io.hpp"
#include "neuralogram/network.hpp"
#include "neuralogram/optim.hpp"
#include "neuralogram/pca.hpp"
#include "neuralogram/probes.hpp"
#include "neuralogram/render.hpp"
#include "neuralogram/rng.hpp"
#include "neuralogram/stats.hpp"
#include "neuralogram/stft.hpp"
#include "neuralogram/tensor.hpp"
#include "neuralogram/trainer.hpp"
#include "neuralogram/wav_io.hpp"
#include "neuralogram/waveform.hpp"
