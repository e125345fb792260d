# netinterf source package
