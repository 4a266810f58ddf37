#pragma once

#include "lzguess/error.hpp"
#include "lzguess/seqcore.hpp"
#include "lzguess/bitsource.hpp"
#include "lzguess/dyadic.hpp"
#include "lzguess/corpus.hpp"
#include "lzguess/lz78.hpp"
#include "lzguess/parallel.hpp"
#include "lzguess/game.hpp"
#include "lzguess/fsgm.hpp"
#include "lzguess/moments.hpp"
#include "lzguess/guessers.hpp"
#include "lzguess/bounds.hpp"
#include "lzguess/sideinfo.hpp"
