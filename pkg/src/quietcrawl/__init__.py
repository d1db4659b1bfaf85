"""Operator-trained forum crawler with a human browsing profile.

Three cooperating halves:

* a trainer that turns a short operator walkthrough of saved pages into
  a structural blueprint of the forum,
* a crawler that replays that blueprint through a browser-faithful
  fetch layer paced like a person reading,
* an access-log analyzer that computes the usual crawler-detection
  features so a run can be checked from the server's side of the wire.
"""

__version__ = "0.1.0"
