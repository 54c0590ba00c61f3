/*
 * Copyright 2026 The routebargain Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef ROUTEBARGAIN_ROUTEBARGAIN_HPP
#define ROUTEBARGAIN_ROUTEBARGAIN_HPP

#include <routebargain/bargaining.hpp>
#include <routebargain/cost_model.hpp>
#include <routebargain/errors.hpp>
#include <routebargain/game.hpp>
#include <routebargain/metrics.hpp>
#include <routebargain/solvers.hpp>
#include <routebargain/water_filling.hpp>

#endif // ROUTEBARGAIN_ROUTEBARGAIN_HPP
