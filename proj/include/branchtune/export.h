// Copyright 2026 The Branchtune Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef BRANCHTUNE_EXPORT_H_
#define BRANCHTUNE_EXPORT_H_

#if defined(_WIN32) || defined(__CYGWIN__)
#  ifdef BRANCHTUNE_BUILDING_LIBRARY
#    define BT_API __declspec(dllexport)
#  else
#    define BT_API __declspec(dllimport)
#  endif
#else
#  define BT_API __attribute__((visibility("default")))
#endif

#endif  // BRANCHTUNE_EXPORT_H_
